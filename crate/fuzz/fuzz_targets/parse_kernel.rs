#![no_main]

use libfuzzer_sys::fuzz_target;

use lcgm_core::io::{kernel_to_value, parse_kernel};
use lcgm_core::{NumericMode, Rational};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(k) = parse_kernel::<Rational>(s, NumericMode::Exact) {
        let back = parse_kernel::<Rational>(&kernel_to_value(&k).to_string(), NumericMode::Exact);
        assert_eq!(back.unwrap(), k);
    }
    let _ = parse_kernel::<f64>(s, NumericMode::Float(1e-9));
});
