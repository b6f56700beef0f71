#![no_main]

use cbre::fmoment::{condition_b_check, MomentTestFunction};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(f) = serde_json::from_str::<MomentTestFunction>(data) else {
        return;
    };
    if f.validate("function").is_err() {
        return;
    }
    for x in [0.0, 0.5, 1.0, 10.0, 1e6] {
        let _ = f.eval(x);
        assert!(!f.ln_eval(x).is_nan());
    }
    let _ = f.growth_exponent();
    let _ = condition_b_check(&f, 1e3);
});
