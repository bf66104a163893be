#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::geometry::validate_coefficients;
use star_transform::io::{read_scheme, write_scheme};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = read_scheme(text) {
        let _ = validate_coefficients(&c);
        assert_eq!(read_scheme(&write_scheme(&c)).unwrap().len(), c.len());
    }
});
