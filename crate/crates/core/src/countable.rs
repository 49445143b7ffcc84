//! Truncated countable-space instances showing that a weakly compact prior
//! family can still fail to make `f(., X) dP/dP_ref` uniformly integrable.
//!
//! Scenarios are `1..=n_max` with reference weights proportional to
//! `2^{-n}`. Prior `P_n` puts mass `1 - 1/n` on scenario 1 and `1/n` on
//! scenario n, and the payoff is `W(n) = n`. All identities are evaluated
//! in exact rational arithmetic.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::ui_modulus;
use crate::model::{PriorSet, ScenarioSpace};

pub const MAX_N: usize = 512;

#[derive(Debug, Clone)]
pub struct TruncatedCountableSpace {
    n_max: usize,
    /// Renormalizer sum_{n <= n_max} 2^{-n} = 1 - 2^{-n_max}.
    z: BigRational,
    reference: Vec<BigRational>,
    priors: Vec<Vec<BigRational>>,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow2(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << n)
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl TruncatedCountableSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if !(3..=MAX_N).contains(&n_max) {
            return Err(Error::Domain(format!("n_max must lie in [3, {MAX_N}], got {n_max}")));
        }
        let z = BigRational::one() - pow2(n_max).recip();
        let reference = (1..=n_max).map(|n| pow2(n).recip() / &z).collect();
        let priors = (1..=n_max)
            .map(|n| {
                let mut p = vec![BigRational::zero(); n_max];
                let inv = rat(1, n as i64);
                p[0] += BigRational::one() - &inv;
                p[n - 1] += inv;
                p
            })
            .collect();
        Ok(Self {
            n_max,
            z,
            reference,
            priors,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn renormalizer(&self) -> &BigRational {
        &self.z
    }

    pub fn reference(&self) -> &[BigRational] {
        &self.reference
    }

    /// Prior `P_n`, 1-based.
    pub fn prior(&self, n: usize) -> &[BigRational] {
        &self.priors[n - 1]
    }

    /// W(omega) = omega, 1-based.
    pub fn payoff(&self) -> Vec<BigRational> {
        (1..=self.n_max).map(|w| BigRational::from_integer(BigInt::from(w))).collect()
    }

    /// dP_n / dP_ref at scenario omega (both 1-based).
    pub fn density(&self, n: usize, omega: usize) -> BigRational {
        &self.priors[n - 1][omega - 1] / &self.reference[omega - 1]
    }

    pub fn expected_payoff(&self, n: usize) -> BigRational {
        self.prior(n)
            .iter()
            .zip(self.payoff())
            .map(|(p, w)| p * w)
            .fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn max_expected_payoff(&self) -> BigRational {
        (1..=self.n_max).map(|n| self.expected_payoff(n)).max().unwrap_or_else(BigRational::zero)
    }

    /// max_n E_{P_n}[W 1{W >= N}].
    pub fn tail_modulus(&self, threshold: u64) -> BigRational {
        let w = self.payoff();
        let t = BigRational::from_integer(BigInt::from(threshold));
        (1..=self.n_max)
            .map(|n| {
                self.prior(n)
                    .iter()
                    .zip(&w)
                    .filter(|(_, wv)| **wv >= t)
                    .map(|(p, wv)| p * wv)
                    .fold(BigRational::zero(), |a, b| a + b)
            })
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    /// max_n E_ref[D_n 1{D_n >= N}] with D_n = dP_n / dP_ref.
    pub fn priors_ui_modulus(&self, threshold: u64) -> BigRational {
        let t = BigRational::from_integer(BigInt::from(threshold));
        (1..=self.n_max)
            .map(|n| {
                (1..=self.n_max)
                    .filter(|&w| self.density(n, w) >= t)
                    .map(|w| self.prior(n)[w - 1].clone())
                    .fold(BigRational::zero(), |a, b| a + b)
            })
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    /// Smallest n with 2^n Z / n >= N, the index attaining the prior-family
    /// modulus; `None` when no scenario is that heavy.
    pub fn heaviest_index(&self, threshold: u64) -> Option<usize> {
        let t = BigRational::from_integer(BigInt::from(threshold));
        (2..=self.n_max).find(|&n| pow2(n) * &self.z / BigRational::from_integer(BigInt::from(n)) >= t)
    }

    pub fn space(&self) -> Result<ScenarioSpace> {
        ScenarioSpace::new(self.reference.iter().map(to_f64).collect())
    }

    pub fn prior_set(&self) -> Result<PriorSet> {
        PriorSet::new(self.priors.iter().map(|p| p.iter().map(to_f64).collect()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTrendRow {
    pub threshold: f64,
    /// Modulus of W^gamma.
    pub fractional: f64,
    /// Modulus of W^1.
    pub linear: f64,
    /// Modulus of W^0 = 1.
    pub constant: f64,
}

/// ui-moduli of `f(., X) = W^X` for the constant positions X = gamma, 1, 0.
/// The first decays like ceil(N^{1/gamma})^{gamma - 1}; the second stays at
/// 1 up to the truncation point.
pub fn power_trend(space: &TruncatedCountableSpace, gamma: f64, thresholds: &[f64]) -> Result<Vec<PowerTrendRow>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("exponent must lie in (0, 1), got {gamma}")));
    }
    let priors = space.prior_set()?;
    let w: Vec<f64> = (1..=space.n_max()).map(|n| n as f64).collect();
    let pow = |e: f64| -> Vec<f64> { w.iter().map(|x| x.powf(e)).collect() };
    let (fx, lx, cx) = (pow(gamma), pow(1.0), pow(0.0));
    Ok(thresholds
        .iter()
        .map(|&threshold| PowerTrendRow {
            threshold,
            fractional: ui_modulus(&priors, &fx, threshold),
            linear: ui_modulus(&priors, &lx, threshold),
            constant: ui_modulus(&priors, &cx, threshold),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusRow {
    pub threshold: u64,
    pub tail: String,
    pub priors: String,
    pub tail_value: f64,
    pub priors_value: f64,
}

/// Tail and prior-family moduli for N = 2 ..= n_max + 1.
pub fn modulus_table(space: &TruncatedCountableSpace) -> Vec<ModulusRow> {
    (2..=space.n_max() as u64 + 1)
        .map(|threshold| {
            let tail = space.tail_modulus(threshold);
            let priors = space.priors_ui_modulus(threshold);
            ModulusRow {
                threshold,
                tail_value: to_f64(&tail),
                priors_value: to_f64(&priors),
                tail: tail.to_string(),
                priors: priors.to_string(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::density_ui_modulus;

    #[test]
    fn density_at_heavy_atom() {
        let s = TruncatedCountableSpace::new(5).unwrap();
        let z = rat(31, 32);
        assert_eq!(s.renormalizer(), &z);
        // untruncated value 8/3, times the renormalizer
        assert_eq!(s.density(3, 3), rat(8, 3) * &z);
        assert_eq!(s.density(3, 1), rat(4, 3) * &z);
    }

    #[test]
    fn expected_payoff_identity() {
        let s = TruncatedCountableSpace::new(12).unwrap();
        for n in 1..=12 {
            assert_eq!(s.expected_payoff(n), rat(2, 1) - rat(1, n as i64));
        }
        assert_eq!(s.max_expected_payoff(), rat(23, 12));
    }

    #[test]
    fn tail_modulus_is_constant() {
        let s = TruncatedCountableSpace::new(10).unwrap();
        for t in 2..=10 {
            assert_eq!(s.tail_modulus(t), BigRational::one());
        }
        assert_eq!(s.tail_modulus(11), BigRational::zero());
    }

    #[test]
    fn priors_modulus_decreases() {
        let s = TruncatedCountableSpace::new(12).unwrap();
        // 2^2 Z / 2 = 2Z < 2, so truncation moves the attaining index to 3
        assert_eq!(s.heaviest_index(2), Some(3));
        assert_eq!(s.priors_ui_modulus(2), rat(1, 3));
        let mut prev = s.priors_ui_modulus(2);
        for t in 3..2000u64 {
            let m = s.priors_ui_modulus(t);
            assert!(m <= prev);
            let expected = s.heaviest_index(t).map_or(BigRational::zero(), |n| rat(1, n as i64));
            assert_eq!(m, expected, "N = {t}");
            prev = m;
        }
        assert_eq!(s.priors_ui_modulus(1 << 12), BigRational::zero());
    }

    #[test]
    fn float_moduli_agree() {
        let s = TruncatedCountableSpace::new(12).unwrap();
        let priors = s.prior_set().unwrap();
        let w: Vec<f64> = (1..=12).map(|n| n as f64).collect();
        let reference: Vec<f64> = s.reference().iter().map(to_f64).collect();
        for t in 2..=13u64 {
            assert_eq!(ui_modulus(&priors, &w, t as f64), to_f64(&s.tail_modulus(t)));
            let d = density_ui_modulus(&reference, &priors, t as f64);
            assert!((d - to_f64(&s.priors_ui_modulus(t))).abs() < 1e-15);
        }
    }

    #[test]
    fn power_trend_shapes() {
        let s = TruncatedCountableSpace::new(30).unwrap();
        let rows = power_trend(&s, 0.5, &[2.0, 3.0, 4.0, 5.0]).unwrap();
        let mut prev = f64::INFINITY;
        for r in &rows {
            let n = r.threshold.powf(2.0).ceil();
            assert!((r.fractional - n.powf(-0.5)).abs() < 1e-14);
            assert!(r.fractional <= prev);
            prev = r.fractional;
            assert_eq!(r.linear, 1.0);
            assert_eq!(r.constant, 0.0);
        }
        assert!(power_trend(&s, 1.0, &[2.0]).is_err());
        assert!(TruncatedCountableSpace::new(2).is_err());
    }
}
