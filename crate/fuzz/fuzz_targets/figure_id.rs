#![no_main]

use libfuzzer_sys::fuzz_target;
use sis_perturb::scenario::FigureId;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(id) = s.parse::<FigureId>() {
            assert_eq!(id.as_str(), s);
        }
    }
});
