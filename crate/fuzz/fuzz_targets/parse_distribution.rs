#![no_main]

use libfuzzer_sys::fuzz_target;

use lcgm_core::io::{distribution_to_value, parse_distribution};
use lcgm_core::{NumericMode, Rational};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(q) = parse_distribution::<Rational>(s, NumericMode::Exact) {
        let back = parse_distribution::<Rational>(&distribution_to_value(&q).to_string(), NumericMode::Exact);
        assert_eq!(back.unwrap(), q);
    }
    let _ = parse_distribution::<f64>(s, NumericMode::Float(1e-9));
});
