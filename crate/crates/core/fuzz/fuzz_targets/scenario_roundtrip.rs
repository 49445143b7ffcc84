#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_duality::io::{emit_scenario, parse_scenario_str};

// Anything that parses must survive emit -> parse -> emit unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(bundle) = parse_scenario_str(src) else { return };
    let emitted = emit_scenario(&bundle);
    let reparsed = parse_scenario_str(&emitted).expect("emitted scenario parses");
    assert_eq!(emitted, emit_scenario(&reparsed));
});
