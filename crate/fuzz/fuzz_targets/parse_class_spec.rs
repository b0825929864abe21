#![no_main]

use libfuzzer_sys::fuzz_target;

use lcgm_core::io::parse_class_spec;
use lcgm_core::{NumericMode, Rational};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_class_spec::<Rational>(s, NumericMode::Exact) {
        let _ = spec.labels();
    }
    let _ = parse_class_spec::<f64>(s, NumericMode::Float(1e-9));
});
