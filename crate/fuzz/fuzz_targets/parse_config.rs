#![no_main]

use std::path::Path;

use leastgrad::problem::ProblemSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Base dir with no files in it, so file references fail cleanly.
    if let Ok(spec) = ProblemSpec::from_toml(text, Path::new("/nonexistent")) {
        let again = ProblemSpec::from_toml(&spec.to_toml().expect("serialize"), Path::new("/nonexistent"));
        assert_eq!(Some(&spec), again.as_ref().ok());
    }
});
