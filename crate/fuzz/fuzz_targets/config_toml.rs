#![no_main]

use libfuzzer_sys::fuzz_target;
use qzeno::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        // anything accepted must re-validate and hash deterministically
        cfg.validate().expect("accepted config re-validates");
        assert_eq!(cfg.hash_hex(), cfg.clone().hash_hex());
        let _ = cfg.schedule().expect("validated schedule builds");
    }
});
