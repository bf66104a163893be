#![no_main]

use libfuzzer_sys::fuzz_target;
use star_transform::io::{read_ballistic, write_ballistic};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((grid, p)) = read_ballistic(text) {
        assert_eq!(read_ballistic(&write_ballistic(grid, &p).unwrap()).unwrap().0, grid);
    }
});
