#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_duality::io::parse_scenario_str;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        let _ = parse_scenario_str(src);
    }
});
