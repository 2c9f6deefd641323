#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for toml_format in [false, true] {
        if let Ok(cfg) = RunConfig::from_str_with_format(text, toml_format) {
            if cfg.validate().is_ok() {
                let _ = cfg.system();
            }
        }
    }
});
