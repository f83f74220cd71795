#![no_main]

use leastgrad::field_io::{parse_field, write_field_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = parse_field(text) {
        // Anything accepted must survive a write/read cycle bit for bit.
        let again = parse_field(&write_field_string(&field)).expect("reparse");
        assert_eq!(field.grid, again.grid);
        assert!(field.values.iter().zip(&again.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
