#![no_main]

use cbre::measure::{JumpMeasure, JumpMeasure1D};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(m) = serde_json::from_str::<JumpMeasure>(data) {
        if m.validate("m1").is_ok() {
            let mass = m.total_mass();
            assert!(mass >= 0.0);
            let _ = m.moment(1, 0);
            let _ = m.moment(0, 2);
            let cut = m.restrict_norm(2.0);
            assert!(cut.total_mass() <= mass * (1.0 + 1e-9) + 1e-12);
            let _ = m.restrict_unit_square();
        }
    }
    if let Ok(nu) = serde_json::from_str::<JumpMeasure1D>(data) {
        if nu.validate("nu").is_ok() {
            let _ = nu.total_mass();
            let _ = nu.exponent_integral(1, None);
            let _ = nu.exponent_integral(2, Some(1.5));
        }
    }
});
