//! Feeds arbitrary bytes through the ScenarioConfig JSON decoder, then runs
//! the configs that parse through validation and (when small enough to stay
//! fast) scenario generation plus the domain validator.

#![no_main]

use libfuzzer_sys::fuzz_target;
use twinmarket::domain::validate_scenario;
use twinmarket::engine::{generate_scenario, ScenarioConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = serde_json::from_str::<ScenarioConfig>(text) else {
        return;
    };
    if config.validate().is_err() {
        return;
    }
    if config.num_avs <= 8 && config.num_traffic_sims <= 8 && config.num_tasks <= 4 {
        let scenario = generate_scenario(&config, 0);
        let report = validate_scenario(&scenario);
        assert!(report.ok(), "generated scenario failed validation: {report}");
    }
});
