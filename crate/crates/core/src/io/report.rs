//! JSON run reports and their plain-text summary.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

pub const REPORT_SCHEMA: &str = "robust-duality/report/v1";

/// A float printed with 12 significant digits. Non-finite values become
/// the strings "inf", "-inf" and "nan".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn rounded(self) -> f64 {
        if self.0 == 0.0 {
            return 0.0;
        }
        if !self.0.is_finite() {
            return self.0;
        }
        format!("{:.11e}", self.0).parse().unwrap_or(self.0)
    }

    pub fn vec(v: &[f64]) -> Vec<Num> {
        v.iter().copied().map(Num).collect()
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.rounded();
        if v.is_nan() {
            s.serialize_str("nan")
        } else if v.is_infinite() {
            s.serialize_str(if v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(v)
        }
    }
}

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.rounded();
        if v != 0.0 && v.is_finite() && !(1e-4..1e12).contains(&v.abs()) {
            write!(f, "{v:e}")
        } else {
            write!(f, "{v}")
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConfigEcho {
    pub scenario: Option<String>,
    pub utility: Option<String>,
    pub tol: Option<Num>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub epsilons: Vec<Num>,
    pub claim: Option<String>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimalSection {
    pub value: Num,
    pub iterations: usize,
    pub status: String,
    pub active_vertices: Vec<usize>,
    pub theta: Vec<Num>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSection {
    pub value: Num,
    pub lambda_hat: Num,
    pub q_hat: Vec<Num>,
    pub prior_weights: Vec<Num>,
    pub p_hat: Vec<Num>,
    pub iterations: usize,
    pub status: String,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingEntry {
    pub epsilon: Num,
    pub value: Num,
    pub delta: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceSection {
    pub claim: String,
    pub p_b: Num,
    pub p_s: Num,
    pub gamma_at_qhat: Num,
    pub v0: Num,
    pub oracle_price: Num,
    pub method_agreement: Num,
    pub lambda_hat: Num,
    pub q_hat: Vec<Num>,
    pub no_arbitrage_bounds: [Num; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Num,
    pub bound: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub status: String,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal: Option<PrimalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<Num>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mixing: Vec<MixingEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<Table>,
}

impl RunReport {
    pub fn new(command: &str, config: ConfigEcho) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            command: command.into(),
            status: "ok".into(),
            config,
            primal: None,
            dual: None,
            gap: None,
            mixing: Vec::new(),
            price: None,
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, value: f64, bound: f64) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value: Num(value),
            bound: Num(bound),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Marks the report failed unless every check passed.
    pub fn finalize(&mut self) {
        self.status = if self.all_passed() { "ok" } else { "tolerance_failure" }.into();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} [{}]", self.command, self.status);
        if let Some(p) = &self.primal {
            let _ = writeln!(out, "primal value      {}  ({} iterations, active {:?})", p.value, p.iterations, p.active_vertices);
        }
        if let Some(d) = &self.dual {
            let _ = writeln!(out, "dual value        {}  ({} iterations)", d.value, d.iterations);
            let _ = writeln!(out, "lambda            {}", d.lambda_hat);
            let _ = writeln!(out, "Q                 {}", join(&d.q_hat));
            let _ = writeln!(out, "prior weights     {}", join(&d.prior_weights));
        }
        if let Some(g) = self.gap {
            let _ = writeln!(out, "gap               {g}");
        }
        if !self.mixing.is_empty() {
            let _ = writeln!(out, "epsilon mixing");
            for m in &self.mixing {
                let _ = writeln!(out, "  eps {:<10} value {:<20} delta {}", m.epsilon.to_string(), m.value.to_string(), m.delta);
            }
        }
        if let Some(p) = &self.price {
            let _ = writeln!(out, "claim             {}", p.claim);
            let _ = writeln!(out, "buyer price       {}", p.p_b);
            let _ = writeln!(out, "seller price      {}", p.p_s);
            let _ = writeln!(out, "bisection oracle  {}", p.oracle_price);
            let _ = writeln!(out, "no-arbitrage      [{}, {}]", p.no_arbitrage_bounds[0], p.no_arbitrage_bounds[1]);
        }
        for t in &self.tables {
            let _ = writeln!(out, "{}", t.name);
            let _ = writeln!(out, "  {}", t.columns.join("\t"));
            for r in &t.rows {
                let cells: Vec<String> = r
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                let _ = writeln!(out, "  {}", cells.join("\t"));
            }
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<28} value {}  bound {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            );
        }
        out
    }
}

fn join(v: &[Num]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_twelve_digits() {
        assert_eq!(Num(1.0 / 3.0).rounded(), 0.333333333333);
        assert_eq!(Num(-2.0f64.sqrt() * 1e-9).rounded(), -1.41421356237e-9);
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Num(-0.0)).unwrap(), "0.0");
        assert_eq!(Num(3.5e-9).to_string(), "3.5e-9");
        assert_eq!(Num(0.25).to_string(), "0.25");
    }

    #[test]
    fn status_follows_checks() {
        let mut r = RunReport::new("verify", ConfigEcho::default());
        r.check("a", true, 0.0, 1.0);
        r.finalize();
        assert_eq!(r.status, "ok");
        r.check("b", false, 2.0, 1.0);
        r.finalize();
        assert_eq!(r.status, "tolerance_failure");
        assert!(r.summary().contains("FAIL b"));
        assert!(r.to_json().contains(REPORT_SCHEMA));
    }
}
