#![no_main]

use libfuzzer_sys::fuzz_target;
use qzeno::MeasurementSchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = MeasurementSchedule::from_json_str(text) {
        let back = MeasurementSchedule::from_json_str(&s.to_json_string()).expect("serialized schedule parses");
        assert_eq!(back, s);
        assert!(s.intervals().iter().all(|&d| d > 0.0));
    }
});
