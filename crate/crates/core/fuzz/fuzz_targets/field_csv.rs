#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::io::{read_field, write_field};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((f, pair)) = read_field(text) {
        let (g, p) = read_field(&write_field(&f, pair)).unwrap();
        assert_eq!(p, pair);
        assert_eq!(g.values.len(), f.values.len());
    }
});
