#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = lcgm_core::io::parse_matrix_csv(s) {
            let text = lcgm_core::io::matrix_to_csv(&m);
            assert_eq!(lcgm_core::io::parse_matrix_csv(&text).unwrap().shape(), m.shape());
        }
    }
});
