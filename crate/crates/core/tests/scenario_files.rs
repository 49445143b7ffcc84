use std::path::PathBuf;

use robust_duality::error::Error;
use robust_duality::io::{emit_scenario, parse_scenario, parse_scenario_str};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn valid_fixtures_parse_and_round_trip() {
    for name in ["binomial.toml", "trinomial_robust.toml", "two_period.toml"] {
        let b = parse_scenario(&fixture(name)).unwrap();
        assert_eq!(parse_scenario_str(&emit_scenario(&b)).unwrap(), b, "{name}");
    }
    let b = parse_scenario(&fixture("binomial.toml")).unwrap();
    assert_eq!(b.claim("up-indicator").unwrap().payoff(), &[1.0, 0.0]);
    assert_eq!(b.solver.seed, 7);
}

#[test]
fn invalid_fixtures_name_their_assumption() {
    let e = parse_scenario(&fixture("arbitrage.toml")).unwrap_err();
    assert_eq!(e.assumption(), Some("A3"));
    let e = parse_scenario(&fixture("bad_prior.toml")).unwrap_err();
    assert_eq!(e.assumption(), Some("A1"));
    assert!(matches!(e, Error::Validation { line: 13, .. }), "{e}");
}

#[test]
fn structural_errors() {
    let base = std::fs::read_to_string(fixture("binomial.toml")).unwrap();
    let cases = [
        ("weights = [0.5, 0.5]", "weights = [1.0, 0.0]"),
        ("branching = [2]", "branching = [3]"),
        ("prices = [[[1.0]], [[2.0], [0.5]]]", "prices = [[[1.0]], [[2.0]]]"),
        ("up-indicator = [1.0, 0.0]", "up-indicator = [1.0]"),
        ("name = \"exp\"", "name = \"power\""),
        ("tol = 1e-6", "tol = -1.0"),
    ];
    for (from, to) in cases {
        let src = base.replacen(from, to, 1);
        assert_ne!(src, base);
        assert!(matches!(parse_scenario_str(&src), Err(Error::Validation { .. })), "{to}");
    }
    assert!(matches!(parse_scenario_str("[space\n"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(parse_scenario_str(""), Err(Error::Parse { .. })));
}
