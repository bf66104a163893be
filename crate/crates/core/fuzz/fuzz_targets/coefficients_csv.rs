#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::io::{read_coefficients, write_coefficients};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = read_coefficients(text) {
        assert_eq!(read_coefficients(&write_coefficients(&t)).unwrap().nmax, t.nmax);
    }
});
