#![no_main]

use cbre::scenario::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if data.len() > 64 * 1024 {
        return;
    }
    // anything that validates must survive a dump and reload unchanged
    if let Ok(s) = ScenarioConfig::from_json_str(data) {
        let again = ScenarioConfig::from_json_str(&s.to_json_pretty()).expect("dumped scenario reloads");
        assert_eq!(s, again);
        let _ = s.times();
    }
});
