#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(r) = lcgm_core::numeric::parse_rational(s) {
            assert_eq!(lcgm_core::numeric::parse_rational(&r.to_string()).unwrap(), r);
        }
    }
});
