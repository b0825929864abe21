#![no_main]

use libfuzzer_sys::fuzz_target;

use lcgm_core::io::parse_lcgm;
use lcgm_core::{NumericMode, Rational};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = parse_lcgm::<Rational>(s, NumericMode::Exact);
    let _ = parse_lcgm::<f64>(s, NumericMode::Float(1e-9));
});
