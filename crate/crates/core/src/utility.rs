//! Utilities on the whole real line, their convex conjugates and the
//! perspective integrand.
//!
//! Two built-in families:
//!
//! * `Exponential { risk_aversion: a }`: `U(x) = -exp(-a x) / a`, bounded above,
//!   `V(y) = (y ln y - y) / a` and `V(0) = 0`.
//! * `Glued`: `U(x) = 1 - exp(-x)` for `x <= 0` and `2 sqrt(x + 1) - 2` for
//!   `x >= 0`. It is C^1 at the junction, unbounded above, and inverting
//!   `U'` branchwise gives
//!   `V(y) = 1 - y + y ln y` for `y >= 1`, `V(y) = 1/y + y - 2` for `0 < y <= 1`,
//!   and `V(0) = +inf`.
//!
//! In [`ConjugateMode::Numeric`] the conjugate is computed from `U` and `U'`
//! alone: solve `U'(x) = y` by bisection and return `U(x*) - x* y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum UtilityKind {
    #[serde(rename = "exp")]
    Exponential {
        #[serde(default = "unit")]
        risk_aversion: f64,
    },
    Glued,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjugateMode {
    #[default]
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utility {
    kind: UtilityKind,
    mode: ConjugateMode,
}

impl Utility {
    pub fn new(kind: UtilityKind, mode: ConjugateMode) -> Result<Self> {
        if let UtilityKind::Exponential { risk_aversion } = kind {
            if !(risk_aversion.is_finite() && risk_aversion > 0.0) {
                return Err(Error::Assumption {
                    assumption: "A2",
                    detail: format!("risk aversion must be positive and finite, got {risk_aversion}"),
                });
            }
        }
        Ok(Self { kind, mode })
    }

    /// `U(x) = -exp(-x)`.
    pub fn exponential() -> Self {
        Self {
            kind: UtilityKind::Exponential { risk_aversion: 1.0 },
            mode: ConjugateMode::Analytic,
        }
    }

    pub fn glued() -> Self {
        Self {
            kind: UtilityKind::Glued,
            mode: ConjugateMode::Analytic,
        }
    }

    pub fn with_mode(self, mode: ConjugateMode) -> Self {
        Self { mode, ..self }
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn mode(&self) -> ConjugateMode {
        self.mode
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            UtilityKind::Exponential { .. } => "exp",
            UtilityKind::Glued => "glued",
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential { risk_aversion: a } => -(-a * x).exp() / a,
            UtilityKind::Glued => {
                if x <= 0.0 {
                    1.0 - (-x).exp()
                } else {
                    2.0 * (x + 1.0).sqrt() - 2.0
                }
            }
        }
    }

    pub fn u_prime(&self, x: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential { risk_aversion: a } => (-a * x).exp(),
            UtilityKind::Glued => {
                if x <= 0.0 {
                    (-x).exp()
                } else {
                    1.0 / (x + 1.0).sqrt()
                }
            }
        }
    }

    pub fn u_second(&self, x: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential { risk_aversion: a } => -a * (-a * x).exp(),
            UtilityKind::Glued => {
                if x <= 0.0 {
                    -(-x).exp()
                } else {
                    -0.5 * (x + 1.0).powf(-1.5)
                }
            }
        }
    }

    /// `sup_x U(x)`, which is also `V(0)`.
    pub fn v_at_zero(&self) -> f64 {
        match self.kind {
            UtilityKind::Exponential { .. } => 0.0,
            UtilityKind::Glued => f64::INFINITY,
        }
    }

    /// Largest |x| the numeric inversion may probe. Exponentials overflow
    /// past ~709, the square-root branch of `Glued` does not.
    fn bracket_cap(&self) -> f64 {
        match self.kind {
            UtilityKind::Exponential { risk_aversion: a } => 700.0 / a,
            UtilityKind::Glued => 1e150,
        }
    }

    /// The unique `x` with `U'(x) = y`, for `y > 0`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!("marginal utility level must be positive, got {y}")));
        }
        match self.mode {
            ConjugateMode::Analytic => Ok(match self.kind {
                UtilityKind::Exponential { risk_aversion: a } => -y.ln() / a,
                UtilityKind::Glued => {
                    if y >= 1.0 {
                        -y.ln()
                    } else {
                        1.0 / (y * y) - 1.0
                    }
                }
            }),
            ConjugateMode::Numeric => self.bisect_marginal(y),
        }
    }

    fn bisect_marginal(&self, y: f64) -> Result<f64> {
        let cap = self.bracket_cap();
        // U' is decreasing: need U'(lo) >= y >= U'(hi)
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        while self.u_prime(lo) < y {
            lo *= 2.0;
            if lo < -cap {
                return Err(Error::Domain(format!("cannot bracket U'(x) = {y} within |x| <= {cap}")));
            }
        }
        while self.u_prime(hi) > y {
            hi *= 2.0;
            if hi > cap {
                return Err(Error::Domain(format!("cannot bracket U'(x) = {y} within |x| <= {cap}")));
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * mid.abs().max(1.0) {
                break;
            }
            if self.u_prime(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `V(y) = sup_x (U(x) - x y)` for `y >= 0`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("conjugate argument must be nonnegative, got {y}")));
        }
        if y == 0.0 {
            return Ok(self.v_at_zero());
        }
        if y.is_infinite() {
            return Ok(f64::INFINITY);
        }
        match self.mode {
            ConjugateMode::Analytic => Ok(match self.kind {
                UtilityKind::Exponential { risk_aversion: a } => (y * y.ln() - y) / a,
                UtilityKind::Glued => {
                    if y >= 1.0 {
                        1.0 - y + y * y.ln()
                    } else {
                        1.0 / y + y - 2.0
                    }
                }
            }),
            ConjugateMode::Numeric => {
                let x = self.bisect_marginal(y)?;
                Ok(self.u(x) - x * y)
            }
        }
    }

    /// Extended-valued conjugate: `+inf` off the domain.
    pub fn v(&self, y: f64) -> f64 {
        self.conjugate(y).unwrap_or(f64::INFINITY)
    }

    /// `V'(y) = -(U')^{-1}(y)` for `y > 0`; `-inf` at zero.
    pub fn v_prime(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self.inverse_marginal(y) {
            Ok(x) => -x,
            Err(_) => f64::NAN,
        }
    }

    /// `V''(y) = -1 / U''((U')^{-1}(y))`.
    pub fn v_second(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        if self.mode == ConjugateMode::Analytic {
            return match self.kind {
                UtilityKind::Exponential { risk_aversion: a } => 1.0 / (a * y),
                UtilityKind::Glued => {
                    if y >= 1.0 {
                        1.0 / y
                    } else {
                        2.0 / (y * y * y)
                    }
                }
            };
        }
        match self.inverse_marginal(y) {
            Ok(x) => -1.0 / self.u_second(x),
            Err(_) => f64::NAN,
        }
    }

    /// `z V(y / z)`, closed at `z = 0` by `0` if `y = 0` and `+inf` otherwise.
    pub fn perspective(&self, y: f64, z: f64) -> f64 {
        if z.is_nan() || y.is_nan() || z < 0.0 {
            return f64::INFINITY;
        }
        if z == 0.0 {
            return if y == 0.0 { 0.0 } else { f64::INFINITY };
        }
        if y < 0.0 {
            return f64::INFINITY;
        }
        if y == 0.0 {
            // z V(0); stays +inf when V(0) = +inf
            return z * self.v_at_zero();
        }
        z * self.v(y / z)
    }

    /// Partial derivatives `(d/dy, d/dz)` of the perspective at `z > 0`, `y >= 0`.
    pub fn perspective_grad(&self, y: f64, z: f64) -> (f64, f64) {
        let r = y / z;
        if r == 0.0 {
            return (f64::NEG_INFINITY, self.v_at_zero());
        }
        let vp = self.v_prime(r);
        (vp, self.v(r) - r * vp)
    }

    /// `V(y) + x y - U(x) >= 0`, zero exactly when `y = U'(x)`.
    pub fn young_gap(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.conjugate(y)?;
        Ok(v + x * y - self.u(x))
    }

    /// Numerical probe of the Inada conditions and monotonicity at scale `x_max`.
    pub fn check_inada(&self, x_max: f64) -> Result<()> {
        let low = self.u_prime(-x_max);
        let high = self.u_prime(x_max);
        let ok = low > 1e3 && high < 1e-1 && self.u(x_max) > self.u(-x_max);
        if ok {
            Ok(())
        } else {
            Err(Error::Assumption {
                assumption: "A2",
                detail: format!("Inada probe failed: U'(-{x_max}) = {low}, U'({x_max}) = {high}"),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct sup of U(x) - x y: coarse scan then ternary search on the
    /// concave objective. Independent of U' inversion.
    fn sup_oracle(u: &Utility, y: f64, lo: f64, hi: f64) -> f64 {
        let f = |x: f64| u.u(x) - x * y;
        let steps = 4000;
        let h = (hi - lo) / steps as f64;
        let best = (0..=steps).map(|i| lo + h * i as f64).fold(lo, |b, x| if f(x) > f(b) { x } else { b });
        let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if f(m1) < f(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        f(0.5 * (a + b))
    }

    #[test]
    fn exponential_conjugate_values() {
        let u = Utility::exponential();
        assert!((u.conjugate(1.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(u.conjugate(0.0).unwrap(), 0.0);
        let v2 = u.conjugate(2.0).unwrap();
        assert!((v2 - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-15);
        assert!((v2 + 0.613706).abs() < 1e-6);
        assert!((sup_oracle(&u, 2.0, -10.0, 10.0) - v2).abs() < 1e-10);
        assert!(matches!(u.conjugate(-0.1), Err(Error::Domain(_))));
        assert_eq!(u.v(-0.1), f64::INFINITY);
    }

    #[test]
    fn glued_closed_form_against_sup_oracle() {
        let u = Utility::glued();
        assert_eq!(u.v_at_zero(), f64::INFINITY);
        for &y in &[0.2, 0.5, 0.9, 1.0, 1.3, 3.0, 10.0] {
            let x_star = u.inverse_marginal(y).unwrap();
            let o = sup_oracle(&u, y, x_star - 20.0, x_star + 20.0);
            assert!((u.conjugate(y).unwrap() - o).abs() < 1e-9, "y = {y}");
        }
        // junction: both branches agree with value and slope
        assert_eq!(u.conjugate(1.0).unwrap(), 0.0);
        assert!((u.u_prime(0.0) - 1.0).abs() < 1e-15);
        assert!((u.u(1e-9) - u.u(-1e-9)).abs() < 1e-8);
    }

    #[test]
    fn numeric_mode_matches_analytic() {
        for base in [Utility::exponential(), Utility::glued()] {
            let num = base.with_mode(ConjugateMode::Numeric);
            for i in 0..100 {
                let y = 10f64.powf(-4.0 + 7.0 * i as f64 / 99.0);
                let a = base.conjugate(y).unwrap();
                let b = num.conjugate(y).unwrap();
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} y={y}: {a} vs {b}", base.name());
                let da = base.v_prime(y);
                let db = num.v_prime(y);
                assert!((da - db).abs() <= 1e-8 * da.abs().max(1.0));
            }
        }
    }

    #[test]
    fn perspective_cases() {
        let u = Utility::exponential();
        assert_eq!(u.perspective(0.0, 0.0), 0.0);
        assert_eq!(u.perspective(1.0, 0.0), f64::INFINITY);
        assert_eq!(u.perspective(-1.0, 0.0), f64::INFINITY);
        assert_eq!(u.perspective(-1.0, 2.0), f64::INFINITY);
        let p = u.perspective(1.0, 2.0);
        assert!((p - (0.5f64.ln() - 1.0)).abs() < 1e-15);
        assert!((p + 1.693147).abs() < 1e-6);
        assert_eq!(Utility::glued().perspective(0.0, 0.5), f64::INFINITY);
        assert_eq!(u.perspective(0.0, 0.5), 0.0);
    }

    #[test]
    fn young_gap_examples() {
        let u = Utility::exponential();
        assert!(u.young_gap(0.0, 1.0).unwrap().abs() < 1e-15);
        let g = u.young_gap(0.0, 2.0).unwrap();
        assert!((g - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((g - 0.386294).abs() < 1e-6);
        for util in [Utility::exponential(), Utility::glued()] {
            for &x in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
                assert!(util.young_gap(x, util.u_prime(x)).unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn inada_probe() {
        assert!(Utility::exponential().check_inada(1e4).is_ok());
        assert!(Utility::glued().check_inada(1e4).is_ok());
        assert!(Utility::new(UtilityKind::Exponential { risk_aversion: -1.0 }, ConjugateMode::Analytic).is_err());
    }

    #[test]
    fn v_prime_limits() {
        for u in [Utility::exponential(), Utility::glued()] {
            assert!(u.v_prime(1e-12) < -20.0);
            assert!(u.v_prime(1e12) > 20.0);
            assert_eq!(u.v_prime(0.0), f64::NEG_INFINITY);
        }
    }

    fn util() -> impl proptest::strategy::Strategy<Value = Utility> {
        prop_oneof![Just(Utility::exponential()), Just(Utility::glued())]
    }

    proptest! {
        #[test]
        fn conjugate_is_convex(u in util(), y1 in 0.0f64..50.0, y2 in 0.0f64..50.0) {
            let mid = u.v(0.5 * (y1 + y2));
            let chord = 0.5 * u.v(y1) + 0.5 * u.v(y2);
            prop_assert!(mid <= chord + 1e-10);
        }

        #[test]
        fn young_inequality(u in util(), x in -20.0f64..20.0, y in 1e-6f64..100.0) {
            prop_assert!(u.young_gap(x, y).unwrap() >= -1e-10);
        }

        #[test]
        fn biconjugate_recovers_utility(u in util(), x in -3.0f64..3.0) {
            // U(x) = inf_y (V(y) + x y), evaluated on a fine y grid
            let best = (1..=60000)
                .map(|i| i as f64 * 5e-4)
                .map(|y| u.v(y) + x * y)
                .fold(f64::INFINITY, f64::min);
            prop_assert!((best - u.u(x)).abs() < 1e-4);
        }

        #[test]
        fn perspective_homogeneous(u in util(), y in 0.0f64..10.0, z in 0.0f64..10.0, t in 1e-3f64..1e3) {
            let a = u.perspective(t * y, t * z);
            let b = t * u.perspective(y, z);
            if b.is_finite() {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0) * t.max(1.0));
            } else {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn perspective_jointly_convex(u in util(), y1 in 0.0f64..5.0, z1 in 1e-3f64..5.0, y2 in 0.0f64..5.0, z2 in 1e-3f64..5.0) {
            let mid = u.perspective(0.5 * (y1 + y2), 0.5 * (z1 + z2));
            let chord = 0.5 * u.perspective(y1, z1) + 0.5 * u.perspective(y2, z2);
            prop_assert!(mid <= chord + 1e-10 * chord.abs().max(1.0));
        }
    }
}
