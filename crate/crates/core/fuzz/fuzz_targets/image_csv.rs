#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::io::{read_image, write_image};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(img) = read_image(text) {
        assert_eq!(read_image(&write_image(&img)).unwrap().values.len(), img.values.len());
    }
});
