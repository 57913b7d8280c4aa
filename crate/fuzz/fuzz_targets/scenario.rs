#![no_main]

use libfuzzer_sys::fuzz_target;
use sis_perturb::config::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(scn) = Scenario::parse(s) {
            let again = Scenario::parse(&scn.to_ini().to_string()).expect("round trip");
            assert_eq!(scn, again);
        }
    }
});
