#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::io::{read_phantom, write_phantom};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = read_phantom(text) {
        assert_eq!(read_phantom(&write_phantom(&p).unwrap()).unwrap(), p);
    }
});
