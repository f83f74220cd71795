#![no_main]

use leastgrad::field_io::parse_mask;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mask) = parse_mask(text) {
            assert!(!mask.interior_cells.is_empty());
            assert!(mask.faces.iter().all(|f| mask.interior[f.inner] && !mask.interior[f.outer]));
        }
    }
});
