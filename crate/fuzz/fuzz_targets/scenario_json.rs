//! Feeds arbitrary bytes through the Scenario JSON decoder and runs whatever
//! parses through the domain validator; the validator must classify, never
//! panic, on any decodable input.

#![no_main]

use libfuzzer_sys::fuzz_target;
use twinmarket::domain::{validate_scenario, Scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(scenario) = serde_json::from_str::<Scenario>(text) else {
        return;
    };
    let _ = validate_scenario(&scenario);
});
