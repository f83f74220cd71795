#![no_main]

use leastgrad::imaging::Phantom;
use leastgrad::problem::BoundaryData;
use leastgrad::{NormKind, Shape};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(shape) = s.parse::<Shape>() {
        let again: Shape = shape.to_string().parse().expect("shape display reparses");
        assert_eq!(shape, again);
        let b = shape.bbox();
        assert!(b.iter().all(|v| v.is_finite()));
    }
    if let Ok(d) = s.parse::<BoundaryData>() {
        assert_eq!(Some(&d), d.to_string().parse::<BoundaryData>().ok().as_ref());
    }
    let _ = s.parse::<Phantom>();
    let _ = NormKind::parse(s);
});
